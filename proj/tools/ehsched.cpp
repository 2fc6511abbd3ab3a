#include <iostream>

#include "ehsched/commands.hpp"

int main(int argc, char** argv) { return ehs::cli::run(argc, argv, std::cerr); }
