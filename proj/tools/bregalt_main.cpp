#include "bregalt/cli.hpp"

int main(int argc, char** argv) { return bregalt::cli_main(argc, argv); }
