#include "head3d/cli.hpp"

int main(int argc, char** argv) { return head3d::run(argc, argv); }
