#include <iostream>
#include <string>
#include <vector>

#include "chw/cli.hpp"

int main(int argc, char** argv) {
  return chw::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
