#include "driveclone/cli/app.hpp"

int main(int argc, char** argv) { return driveclone::cli::main(argc, argv); }
