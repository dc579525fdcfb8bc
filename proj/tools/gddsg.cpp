#include "gddsg/cli.hpp"

int main(int argc, char** argv) { return gddsg::cli::run(argc, argv); }
