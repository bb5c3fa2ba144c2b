#include "rssbreath/cli.hpp"

int main(int argc, char** argv) { return rssbreath::cli::run(argc, argv); }
