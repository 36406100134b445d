#include "psolv/cli.hpp"

int main(int argc, char** argv) { return psolv::run_cli(argc, argv); }
