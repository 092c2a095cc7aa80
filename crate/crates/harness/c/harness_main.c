/*
 * Frame loop: a 4-byte big-endian length, that many bytes, repeated until
 * end of input. One "1" or "0" line per frame on stdout.
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "speclift_harness.h"

static int tracing;

void speclift_check(const char *id, int ok)
{
	if (tracing)
		fprintf(stderr, "CHECK %s %d\n", id, ok ? 1 : 0);
}

static size_t read_full(uint8_t *p, size_t n)
{
	size_t got = 0;

	while (got < n) {
		size_t k = fread(p + got, 1, n - got, stdin);
		if (k == 0)
			break;
		got += k;
	}
	return got;
}

/* Word storage so modules may cast the buffer to aligned structs. */
static uint64_t storage[SPECLIFT_MAX_FRAME / 8 + 1];

int main(int argc, char **argv)
{
	uint8_t *buf = (uint8_t *)storage;
	uint8_t hdr[4];
	int i;

	for (i = 1; i < argc; i++)
		if (strcmp(argv[i], "--trace") == 0)
			tracing = 1;

	for (;;) {
		size_t got = read_full(hdr, 4);
		uint32_t n;

		if (got == 0)
			return 0;
		if (got < 4)
			return 3;
		n = (uint32_t)hdr[0] << 24 | (uint32_t)hdr[1] << 16 | (uint32_t)hdr[2] << 8 | hdr[3];
		if (n > SPECLIFT_MAX_FRAME)
			return 4;
		if (read_full(buf, n) != n)
			return 3;
		fputs(speclift_parse(buf, n) ? "1\n" : "0\n", stdout);
		fflush(stdout);
		if (tracing)
			fflush(stderr);
	}
}
