#include <doctest.h>
TEST_CASE("placeholder_second_order") { CHECK(true); }
