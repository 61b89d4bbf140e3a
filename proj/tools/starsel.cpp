#include "starsel/cli.hpp"

int main(int argc, char** argv) { return starsel::run_cli(argc, argv); }
