/* Isolated control packet validation from bfd_recv_cb. */
#include <stddef.h>
#include <stdint.h>

#include "speclift_harness.h"

#define BFD_VERSION 1
#define BFD_PKT_LEN 24

#define BFD_GETVER(diag) (((diag) >> 5) & 0x07)

struct bfd_discrs {
	uint32_t my_discr;
	uint32_t remote_discr;
};

struct bfd_pkt {
	uint8_t diag;
	uint8_t flags;
	uint8_t detect_mult;
	uint8_t len;
	struct bfd_discrs discrs;
	uint32_t timers_desired_min_tx;
	uint32_t timers_required_min_rx;
	uint32_t timers_required_min_echo;
};

int speclift_parse(const uint8_t *msgbuf, size_t mlen)
{
	const struct bfd_pkt *cp;
	int ok;

	ok = mlen >= BFD_PKT_LEN;
	speclift_check("min_size", ok);
	if (!ok)
		return 0;

	cp = (const struct bfd_pkt *)msgbuf;

	ok = BFD_GETVER(cp->diag) == BFD_VERSION;
	speclift_check("version", ok);
	if (!ok)
		return 0;

	ok = cp->detect_mult != 0;
	speclift_check("detect_mult", ok);
	if (!ok)
		return 0;

	ok = !((cp->len < BFD_PKT_LEN) || (cp->len != mlen));
	speclift_check("length", ok);
	if (!ok)
		return 0;

	return 1;
}
