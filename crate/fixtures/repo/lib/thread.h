/* Minimal event-loop task handle. */
#ifndef LIB_THREAD_H
#define LIB_THREAD_H

struct thread {
	int type;
	int fd;
	void *arg;
	struct thread *next;
};

#define THREAD_FD(t) ((t)->fd)
#define THREAD_ARG(t) ((t)->arg)

int thread_add_read(void *master, void (*func)(struct thread *), void *arg, int fd, struct thread **ref);

#endif
