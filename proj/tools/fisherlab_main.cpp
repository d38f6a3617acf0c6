#include "fisherlab/cli.hpp"

int main(int argc, char** argv) { return fisherlab::run_cli(argc, argv); }
