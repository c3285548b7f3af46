#include "kcr_cli.hpp"

int main(int argc, char** argv) { return kcr::cli::run(argc, argv); }
