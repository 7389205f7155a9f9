#include "hsdf/cli/cli.hpp"

int main(int argc, char** argv) { return hsdf::cli::run(argc, argv); }
