#include "ratkit/pipeline.hpp"

#include <iostream>

int main(int argc, char** argv) { return ratkit::run_cli(argc, argv, std::cout, std::cerr); }
