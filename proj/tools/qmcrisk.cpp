#include <iostream>

#include "qmcrisk/service/cli.hpp"

int main(int argc, char** argv) { return qmcrisk::service::run_cli(argc, argv, std::cout, std::cerr); }
