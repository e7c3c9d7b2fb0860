#include "mscr/cli.hpp"

int main(int argc, char** argv) { return mscr::cli::run(argc, argv); }
