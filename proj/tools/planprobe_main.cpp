#include <iostream>

#include "planprobe/cli.hpp"

int main(int argc, char** argv) {
  return planprobe::cli::dispatch(argc, argv, std::cout, std::cerr);
}
