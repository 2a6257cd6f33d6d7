#include "dlen/cli.hpp"

int main(int argc, char** argv) { return dlen::cli_main(argc, argv); }
