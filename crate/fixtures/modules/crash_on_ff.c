/* Dies on any packet whose first byte is 0xff. */
#include <stdlib.h>

#include "speclift_harness.h"

int speclift_parse(const uint8_t *buf, size_t len)
{
	if (len > 0 && buf[0] == 0xff)
		abort();
	return len % 2 == 0;
}
