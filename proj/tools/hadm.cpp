#include <iostream>
#include <string>
#include <vector>

#include "hadm/cli/cli.hpp"

int main(int argc, char** argv) {
    return hadm::cli::main_entry(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
