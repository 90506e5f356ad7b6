#include "parmor/cli.hpp"

int main(int argc, char** argv) { return parmor::run_cli(argc, argv); }
