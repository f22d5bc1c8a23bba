#include <iostream>

#include "efvms/cli.hpp"

int main(int argc, char** argv) { return efvms::run_cli(argc, argv, std::cout, std::cerr); }
