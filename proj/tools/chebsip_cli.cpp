#include "chebsip/bench/cli.hpp"

int main(int argc, char** argv) { return chebsip::bench::run_cli(argc, argv); }
