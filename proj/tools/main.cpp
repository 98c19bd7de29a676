#include "ventrl/cli.hpp"

int main(int argc, char** argv) { return ventrl::cli::run(argc, argv); }
