#include "parcon/cli.hpp"

int main(int argc, char** argv) { return parcon::cli_main(argc, argv); }
