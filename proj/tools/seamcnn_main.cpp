#include "seamcnn/cli.hpp"

int main(int argc, char** argv) { return seamcnn::cli::cli_main(argc, argv); }
