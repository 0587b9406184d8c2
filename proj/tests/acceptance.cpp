#include <iostream>
int main(int argc, char** argv) {
  std::cerr << "acceptance suite placeholder\n";
  return 1;
}
