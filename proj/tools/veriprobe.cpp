#include "veriprobe/cli.hpp"

int main(int argc, char** argv) { return veriprobe::cli::run(argc, argv); }
