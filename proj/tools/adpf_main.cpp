#include <iostream>
#include <string>
#include <vector>

#include "adpf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return adpf::run_cli(args, std::cout, std::cerr);
}
