#include "oscar/cli.hpp"

int main(int argc, char** argv) { return oscar::cli::run(argc, argv); }
