#include "genemut/pipeline.hpp"

int main(int argc, char** argv) { return genemut::cli_main(argc, argv); }
