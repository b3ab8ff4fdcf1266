#include "qoscomp/cli.hpp"

#include <iostream>

int main(int argc, char **argv)
{
    return qoscomp::run_cli(argc, argv, std::cout, std::cerr);
}
