#include <iostream>
#include <string>
#include <vector>

#include "scalecheck/cli.hpp"

int main(int argc, char** argv) {
    return scalecheck::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
