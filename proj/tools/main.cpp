#include "rdbounds/cli.hpp"

int main(int argc, char** argv)
{
  return rdb::run_cli(argc, argv);
}
