#ifndef SPECLIFT_HARNESS_H
#define SPECLIFT_HARNESS_H

#include <stddef.h>
#include <stdint.h>

#define SPECLIFT_MAX_FRAME 65535

/* Implemented by the module: nonzero accepts buf[0..len). */
int speclift_parse(const uint8_t *buf, size_t len);

/* Provided by the driver; prints a trace line when tracing is on. */
void speclift_check(const char *id, int ok);

#endif
