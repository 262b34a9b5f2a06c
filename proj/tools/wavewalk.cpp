#include <iostream>

#include "wavewalk/cli.hpp"

int main(int argc, char** argv)
{
    return wavewalk::run_cli(argc, argv, std::cout, std::cerr);
}
