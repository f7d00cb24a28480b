#include "topotrace/cli.hpp"

int main(int argc, char** argv) {
  return topotrace::cli::run(argc, argv);
}
