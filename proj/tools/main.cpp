#include <iostream>
#include <string>
#include <vector>

#include "kronsc/cli.hpp"

int main(int argc, char** argv) {
  return kronsc::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
