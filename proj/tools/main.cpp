#include "ctclust/cli.hpp"

int main(int argc, char** argv) {
  return ctclust::run_cli(argc, argv);
}
