#include <cstdio>

int main() {
  std::printf("zskd: command-line driver under construction\n");
  return 1;
}
