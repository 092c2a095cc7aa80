/* Writes text that is not a verdict line. */
#include <stdio.h>

#include "speclift_harness.h"

int speclift_parse(const uint8_t *buf, size_t len)
{
	(void)buf;
	printf("maybe %zu\n", len);
	return 1;
}
