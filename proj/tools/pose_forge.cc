#include <iostream>
#include <string>
#include <vector>

#include "pose_forge/app.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pose_forge::app::run(args, std::cout, std::cerr);
}
