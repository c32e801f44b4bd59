#include <iostream>

#include "sasow/cli.hpp"

int main(int argc, char** argv) {
  return sasow::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
