/* Does not compile. */
#include "speclift_harness.h"

int speclift_parse(const uint8_t *buf, size_t len)
{
	return buf[0] == len
}
