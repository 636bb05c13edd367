#include <doctest.h>
TEST_CASE("placeholder_dynamics") { CHECK(true); }
