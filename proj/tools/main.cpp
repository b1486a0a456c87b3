#include "mpath/cli.hpp"

int main(int argc, char** argv) { return mpath::cli::run(argc, argv); }
