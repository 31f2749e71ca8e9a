#include "srpo/cli.hpp"

int main(int argc, char** argv) { return srpo::dispatch(argc, argv); }
