#include <iostream>

#include "lsec/cli.hpp"

int main(int argc, char** argv) {
  return lsec::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
