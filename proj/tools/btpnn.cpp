#include "btpnn/cli.hpp"

int main(int argc, char** argv) { return btpnn::cli::run(argc, argv); }
