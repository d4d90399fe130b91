#include "bridgevae/app/cli.hpp"

int main(int argc, char** argv) { return bvae::app::cli_main(argc, argv); }
