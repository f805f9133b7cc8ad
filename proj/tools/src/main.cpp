#include <iostream>

#include "sblem_app/commands.hpp"

int main(int argc, char** argv) {
  return sblem::app::run_cli(argc, argv, std::cout, std::cerr);
}
