#include "storewatch/pipeline.hpp"

int main(int argc, char** argv) { return storewatch::pipeline::run_cli(argc, argv); }
