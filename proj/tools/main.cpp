#include "hypstab/cli.hpp"

int main(int argc, char** argv) { return hypstab::cli_main(argc, argv); }
