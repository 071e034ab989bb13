#include "styleguide/cli.hpp"

int main(int argc, char** argv) { return styleguide::cli_main(argc, argv); }
