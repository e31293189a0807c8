#include "amaa/cli.hpp"

int main(int argc, char** argv) { return amaa::cli_dispatch(argc, argv); }
