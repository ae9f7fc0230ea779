#include "peakrep/app.hpp"

int main(int argc, char** argv) { return peakrep::run_cli(argc, argv); }
