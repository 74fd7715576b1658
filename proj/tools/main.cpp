#include "moodminer/cli.hpp"

int main(int argc, char** argv) {
  return moodminer::cli::cli_dispatch(argc, argv);
}
