#include <iostream>
#include <string>
#include <vector>

#include "agentrag/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return agentrag::run_cli(args, std::cout, std::cerr);
}
