/* Exits cleanly on the third packet without answering it. */
#include <stdlib.h>

#include "speclift_harness.h"

int speclift_parse(const uint8_t *buf, size_t len)
{
	static int seen;

	(void)buf;
	(void)len;
	if (++seen == 3)
		exit(0);
	return 1;
}
