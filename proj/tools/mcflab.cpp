// Experiment runner CLI. Subcommands are wired up in cli_main - see README.
#include <iostream>

int main(int argc, char** argv) {
  std::cerr << "mcflab: CLI under construction\n";
  (void)argc;
  (void)argv;
  return 2;
}
