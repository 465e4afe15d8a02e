#include "crel/cli.hpp"

int main(int argc, char** argv) { return crel::run_cli(argc, argv); }
