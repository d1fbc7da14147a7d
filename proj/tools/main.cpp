#include "nullspace/cli.hpp"

int main(int argc, char** argv) { return nullspace::run_cli(argc, argv); }
