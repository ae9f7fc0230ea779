import numpy as np
import pytest
from scipy import signal, stats

import peakrep


def test_filter_matches_scipy():
    rng = np.random.default_rng(3)
    x = np.cumsum(rng.normal(size=1000)) + rng.normal(size=1000)
    for order in (2, 4, 6):
        sos = signal.butter(order // 2, [0.6, 15.0], btype="bandpass", fs=100.0, output="sos")
        ref = signal.sosfiltfilt(sos, x, padtype="odd", padlen=3 * (order + 1))
        got = np.asarray(peakrep.bandpass(x, order=order))
        assert np.max(np.abs(got - ref)) < 1e-9


def test_design_matches_scipy_response():
    sos = np.asarray(peakrep.design_bandpass())
    ref = signal.butter(2, [0.6, 15.0], btype="bandpass", fs=100.0, output="sos")
    w = np.linspace(0.1, 49.0, 200)
    _, h = signal.sosfreqz(sos, worN=w, fs=100.0)
    _, h_ref = signal.sosfreqz(ref, worN=w, fs=100.0)
    assert np.max(np.abs(np.abs(h) - np.abs(h_ref))) < 1e-9


def test_welch_matches_scipy():
    rng = np.random.default_rng(9)
    for _ in range(20):
        a = rng.normal(0.0, 1.0, size=rng.integers(2, 30))
        b = rng.normal(0.4, 2.0, size=rng.integers(2, 30))
        t, dof, p = peakrep.welch(a, b)
        ref = stats.ttest_ind(a, b, equal_var=False)
        assert t == pytest.approx(ref.statistic, rel=1e-10)
        assert p == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-12)
    t, dof, p = peakrep.welch([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert (t, dof) == (-1.0, 8.0)


def test_t_tail_matches_scipy():
    for dof in (1.0, 3.5, 30.0):
        for t in (0.0, 0.5, 2.0, 7.0):
            assert peakrep.t_two_tailed_p(t, dof) == pytest.approx(2 * stats.t.sf(t, dof), abs=1e-12)


def test_timestamps():
    assert peakrep.index_to_timestamp(97) == "2020-01-01 00:01:37"
    assert peakrep.timestamp_to_index("2020-01-01 00:01:37") == 97
    with pytest.raises(peakrep.PeakrepError, match="WrongAnchor"):
        peakrep.timestamp_to_index("2021-01-01 00:00:00")


def test_pipeline_round_trip():
    seg = peakrep.synthesize("ECG", seed=5, ibi=0.8, jitter=0.1, preprocess=True)
    x = np.asarray(seg["samples"])
    text = peakrep.represent(x, min_distance=0)
    assert text.startswith("<TS_START>\n") and text.endswith("\n<TS_END>")
    recon = np.asarray(peakrep.reconstruct(text, len(x), x[0], x[-1]))
    assert np.corrcoef(recon, x)[0, 1] > 0.999

    pred = peakrep.detect(x, 100.0, "pan_tompkins")
    m = peakrep.match(pred, seg["gt_peaks"], 100.0)
    assert m["f1"] >= 0.95

    stamps = ", ".join(peakrep.index_to_timestamp(g) for g in seg["gt_peaks"])
    scored = peakrep.score_output("{R: [" + stamps + "]}", seg["gt_peaks"], 100.0, "R")
    assert scored["status"] == "ok"
    assert scored["total"] == 1.0
