#include <cstdio>

int main() {
  std::puts("mhan: placeholder");
  return 0;
}
