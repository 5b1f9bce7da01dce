#include "skillforge/cli/commands.h"

int main(int argc, char** argv) {
  return skillforge::cli::run(argc, argv);
}
