#include "bifurcurve/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return bifurcurve::run_cli(argc, argv, std::cout, std::cerr);
}
