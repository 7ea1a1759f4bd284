#include "qnn/cli.hpp"

int main(int argc, char** argv) { return qnn::cli::run(argc, argv); }
