// Command-line front end; subcommands are wired up in src/cli.cpp.
#include <cstdio>

int main() {
  std::fprintf(stderr, "lufilter: subcommands not wired yet\n");
  return 2;
}
